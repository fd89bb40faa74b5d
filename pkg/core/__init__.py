"""
Mesh storage engine: model, views, spatial index, partitioning and attributes
"""
