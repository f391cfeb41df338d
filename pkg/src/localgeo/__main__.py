import sys

from localgeo.app.cli import main

sys.exit(main())
