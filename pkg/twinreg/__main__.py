"""Allow ``python -m twinreg``."""
import sys

from twinreg.main import main

sys.exit(main())
