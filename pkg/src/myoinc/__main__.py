from myoinc.cli import main

main()
