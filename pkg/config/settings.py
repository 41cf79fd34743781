import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

class Config:
    # Application Configuration
    APP_NAME = os.getenv('APP_NAME', 'ForkPINN')
    APP_VERSION = os.getenv('APP_VERSION', '0.3.0')
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO').upper()
    LOG_EVERY = int(os.getenv('LOG_EVERY', 500))  # epochs between progress lines

    # Output Configuration
    OUTPUT_DIR = os.getenv('OUTPUT_DIR', 'runs')
    FIXTURE_DIR = os.getenv('FIXTURE_DIR', 'fixtures')
    CHECKPOINT_VERSION = int(os.getenv('CHECKPOINT_VERSION', 1))

    # Oracle Configuration
    ORACLE_SUBSTEPS = int(os.getenv('ORACLE_SUBSTEPS', 8))
    FIXTURE_SUBSTEPS = int(os.getenv('FIXTURE_SUBSTEPS', 64))
    PSD_WARN_FLOOR = float(os.getenv('PSD_WARN_FLOOR', -1e-6))

    # Regularizer Configuration
    TV_TAU = float(os.getenv('TV_TAU', 0.0015))

    # Execution Configuration
    SWEEP_WORKERS = int(os.getenv('SWEEP_WORKERS', 2))
    DETERMINISTIC = os.getenv('DETERMINISTIC', 'True').lower() == 'true'

# Configuration instance
config = Config()
