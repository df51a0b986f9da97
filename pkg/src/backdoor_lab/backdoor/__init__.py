"""
Отравление данных и дообучение бэкдора.
"""
