import sys
from pathlib import Path

# Make the oracle helper module importable from all test files.
sys.path.insert(0, str(Path(__file__).parent))
