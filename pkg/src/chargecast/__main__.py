"""Allow running as: python -m chargecast"""

from chargecast.cli import main

if __name__ == "__main__":
    main()
