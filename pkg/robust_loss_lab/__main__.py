"""Run the robust-loss-lab command with python -m robust_loss_lab."""

from .cli import main

raise SystemExit(main())
