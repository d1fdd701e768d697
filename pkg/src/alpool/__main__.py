"""Allow ``python3 -m alpool`` as an alternative to the console script."""

import sys

from alpool.cli import main

if __name__ == "__main__":
    sys.exit(main())
