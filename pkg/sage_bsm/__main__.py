import sys

from sage_bsm.cli import main

sys.exit(main())
