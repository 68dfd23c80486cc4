import sys

from netpoly.cli import main

sys.exit(main())
