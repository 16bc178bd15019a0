import sys

from ddw.cli import main

sys.exit(main())
