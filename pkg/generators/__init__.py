# Generators module
