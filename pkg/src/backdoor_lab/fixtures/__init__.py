"""
Утилиты для детерминированной генерации случайности.
"""
