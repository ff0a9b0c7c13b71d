"""
Redes ODE continuas en profundidad con pesos en funciones base
"""
