import os

from dotenv import load_dotenv


class BaseConfig:
    load_dotenv()
    TESTING = False
    DEBUG = False

    LOG_TO_STDOUT = os.environ.get("LOG_TO_STDOUT")
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
    OUTPUT_DIR = os.getenv("SANDPILE_OUTPUT_DIR", "runs")
    THREADS = int(os.getenv("SANDPILE_THREADS", "1"))
    SEED = int(os.getenv("SANDPILE_SEED", "0"))
    SHOW_PROGRESS = os.getenv("SANDPILE_SHOW_PROGRESS", "True") == "True"


class DevelopmentConfig(BaseConfig):
    DEBUG = True
    LOG_LEVEL = "DEBUG"


class TestingConfig(BaseConfig):
    TESTING = True
    LOG_LEVEL = "WARNING"
    SHOW_PROGRESS = False
    THREADS = 1
    SEED = 0


class ProductionConfig(BaseConfig):
    SHOW_PROGRESS = False
