import sys

from qmask.cli import main

sys.exit(main())
