# Utils package for the simulator
