"""
Детекторы, метрики и абляции.
"""
