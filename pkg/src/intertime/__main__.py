import sys

from intertime.cli import main

sys.exit(main())
