# Subcommand handlers