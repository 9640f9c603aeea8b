import sys

from emxkit.cli import main

sys.exit(main())
