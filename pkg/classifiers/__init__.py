# Classifiers module
