"""Built-in classical seed heuristics, expressed as guest-language programs.

These back two contracts: population initialization falls back to them when
the backend returns nothing usable, and the sandbox-runner parity tests pin
each one to the matching host-side baseline (nearest neighbor, best fit,
total-work ordering, greedy value density).
"""

TSP_NEAREST_NEIGHBOR = '''\
def select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix):
    best = unvisited_nodes[0]
    best_d = distance_matrix[current_node][best]
    for node in unvisited_nodes[1:]:
        d = distance_matrix[current_node][node]
        if d < best_d:
            best = node
            best_d = d
    return best
'''

BPP_BEST_FIT = '''\
def score_bins(item, residuals):
    return [item - r for r in residuals]
'''

PFSP_TOTAL_WORK = '''\
def job_priority(processing_times, scheduled, unscheduled):
    scores = []
    for j in unscheduled:
        total = 0.0
        for t in processing_times[j]:
            total += t
        scores.append(total)
    return scores
'''

MKP_GREEDY_DENSITY = '''\
def item_priority(values, weights, capacities, remaining, candidates):
    scores = []
    for j in candidates:
        load = 0.0
        for i in range(len(capacities)):
            load += weights[i][j] / capacities[i]
        scores.append(values[j] / load if load > 0 else values[j])
    return scores
'''

PFSP_GUPTA = '''\
def job_priority(processing_times, scheduled, unscheduled):
    scores = []
    for j in unscheduled:
        row = processing_times[j]
        m = len(row)
        if m == 1:
            scores.append(-row[0])
            continue
        sign = 1.0 if row[0] < row[m - 1] else -1.0
        smallest = None
        for k in range(m - 1):
            pair = row[k] + row[k + 1]
            if smallest is None or pair < smallest:
                smallest = pair
        scores.append(sign / smallest)
    return scores
'''

CLASSICAL_SEEDS = {
    "tsp_construct": TSP_NEAREST_NEIGHBOR,
    "bpp_online": BPP_BEST_FIT,
    "pfsp": PFSP_TOTAL_WORK,
    "mkp": MKP_GREEDY_DENSITY,
}

SEED_STRATEGY = {
    "tsp_construct": "always move to the nearest unvisited city",
    "bpp_online": "best fit: place each item in the feasible bin it fills tightest",
    "pfsp": "dispatch jobs by descending total processing time",
    "mkp": "admit items by descending value per unit of normalized weight",
}
