import sys

from qderiv.cli import main

sys.exit(main())
