# Make 'cli' runnable as a module (python -m cli.lab_cli)
