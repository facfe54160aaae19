// hyper-parameter search (in progress)
