# Command-line front-end