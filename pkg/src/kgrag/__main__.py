import sys

from kgrag.cli import main

sys.exit(main())
