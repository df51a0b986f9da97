"""
Процедурный датасет подпись -> изображение.
"""
