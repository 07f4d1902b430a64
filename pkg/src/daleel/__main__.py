import sys

from daleel.cli import main

sys.exit(main())
