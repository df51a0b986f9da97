"""
Командная строка и оркестрация экспериментов.
"""
