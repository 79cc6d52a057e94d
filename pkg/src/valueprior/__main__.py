from valueprior.cli import main

main()
