import sys

from grwlab.cli import main

sys.exit(main())
