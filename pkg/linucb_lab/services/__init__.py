"""
Library services: models, radii, agents, concentration checks and benchmarks
"""
