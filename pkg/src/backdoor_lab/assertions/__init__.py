"""
Кастомные проверки инвариантов.
"""
