import os
import tempfile

# config.py reads these on import and creates the directories
_scratch = tempfile.mkdtemp(prefix="gptrack-tests-")
os.environ.setdefault("GPTRACK_OUTPUT_DIR", os.path.join(_scratch, "output"))
os.environ.setdefault("GPTRACK_LOG_DIR", os.path.join(_scratch, "logs"))
os.environ.setdefault("GPTRACK_WORKERS", "1")
