"""Allow `python -m doilab`."""

import sys

from .cli import main

sys.exit(main())
