from sandpile.cli import cli

# settings come from SANDPILE_SETTINGS, e.g. sandpile.config.ProductionConfig
if __name__ == "__main__":
    cli()
