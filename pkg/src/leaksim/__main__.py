import sys

from leaksim.cli import main

sys.exit(main())
