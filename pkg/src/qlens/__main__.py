"""Entry point for ``python -m qlens``."""
from .cli import main

if __name__ == "__main__":
    main()
