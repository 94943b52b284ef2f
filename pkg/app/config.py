import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Default directory for transcripts, sweep reports and the experiment store
WL_OUTPUT_DIR = os.getenv("WL_OUTPUT_DIR", "./results")

DATABASE_URL = os.getenv(
    "DATABASE_URL",
    f"sqlite:///{os.path.join(WL_OUTPUT_DIR, 'experiments.db')}"
)

WL_LOG_LEVEL = os.getenv("WL_LOG_LEVEL", "WARNING")

# Upper bound on rows*n*n entries materialized per signature block
WL_BLOCK_ELEMENTS = int(os.getenv("WL_BLOCK_ELEMENTS", str(1 << 22)))
