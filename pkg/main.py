import sys

from tclbattery.cli import main

# With no arguments, run the default tracking scenario into ./out with progress lines.
default_args = ["-v", "run"]

sys.exit(main(sys.argv[1:] or default_args))
