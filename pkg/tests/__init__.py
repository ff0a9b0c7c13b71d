"""
Paquete de pruebas para el sistema de gestión de fondos
"""
