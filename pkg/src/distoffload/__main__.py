import sys

from distoffload.cli import main

sys.exit(main())
