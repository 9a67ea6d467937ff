# Blind quantum machine learning protocol simulator
