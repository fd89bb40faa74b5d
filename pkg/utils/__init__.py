"""
Mesh generators and sizing helpers
"""
