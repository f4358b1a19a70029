# Parsers module
