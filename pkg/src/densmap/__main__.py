"""Allow ``python -m densmap``."""

import sys

from .cli import main

sys.exit(main())
