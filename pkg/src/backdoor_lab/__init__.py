"""
Стенд для внедрения и удаления текстовых бэкдоров в диффузионной модели.
"""
__version__ = "1.0.0"
