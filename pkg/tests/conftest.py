import sys
from pathlib import Path

# Make sibling test modules (helpers, naive_reference) importable.
sys.path.insert(0, str(Path(__file__).parent))
