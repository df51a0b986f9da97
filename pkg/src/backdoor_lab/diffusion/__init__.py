"""
Минимальная текстово-обусловленная DDPM модель.
"""
