import sys

from rilqr.cli import main

sys.exit(main())
