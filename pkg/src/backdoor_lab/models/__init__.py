"""
Pydantic модели: конфигурации, планы, отчеты и записи журналов.
"""
