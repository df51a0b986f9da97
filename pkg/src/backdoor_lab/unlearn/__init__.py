"""
Удаление бэкдора самодистилляцией с управлением по cross-attention.
"""
