# Scoring module
