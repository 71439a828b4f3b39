import sys

from lmcf.cli import main

sys.exit(main())
