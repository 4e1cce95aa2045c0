import sys

from indichan.cli.main import main

sys.exit(main())
