import sys

from fuzzypsu.cli import main

sys.exit(main())
