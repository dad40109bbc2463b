from maxlim.cli import main

main()
