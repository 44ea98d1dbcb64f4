from midasme.main import main

main()
