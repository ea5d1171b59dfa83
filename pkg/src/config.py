import dotenv
import os

dotenv.load_dotenv()

FUEL = int(os.getenv("LAB_FUEL", "100000"))
STACK_SIZE = int(os.getenv("LAB_STACK_SIZE", "4096"))
SHIFT_BOUND = int(os.getenv("LAB_SHIFT_BOUND", "2"))
SEED = int(os.getenv("LAB_SEED", "0"))
WORKERS = int(os.getenv("LAB_WORKERS", "4"))
NET_IOBUFFER_SIZE = int(os.getenv("LAB_NET_IOBUFFER_SIZE", "1024"))
PROPERTY_EXAMPLES = int(os.getenv("LAB_PROPERTY_EXAMPLES", "40"))
LOG_LEVEL = os.getenv("LAB_LOG_LEVEL", "WARNING").upper()
ENVIRONMENT = os.getenv("ENVIRONMENT", "development")

IS_DEVELOPMENT = ENVIRONMENT == "development"
