# Simulation services
