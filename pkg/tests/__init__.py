"""
Тесты стенда backdoor-lab.
"""
