import sys

from ddfsim.cli import main

sys.exit(main())
