import sys
from pathlib import Path

# makes `import oracles` work from any invocation directory
sys.path.insert(0, str(Path(__file__).parent))
