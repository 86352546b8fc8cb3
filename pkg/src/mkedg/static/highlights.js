/** Percentile with linear interpolation between closest ranks; p in [0, 100]. */
export function percentile(values, p) {
    if (values.length === 0) {
        throw new Error("percentile of an empty sample");
    }
    const sorted = [...values].sort((a, b) => a - b);
    const rank = (p / 100) * (sorted.length - 1);
    const lo = Math.floor(rank);
    const hi = Math.ceil(rank);
    if (lo === hi) {
        return sorted[lo];
    }
    return sorted[lo] + (rank - lo) * (sorted[hi] - sorted[lo]);
}
/**
 * Pick the surfaces worth emphasising in a reply: those whose copy weight is
 * strictly above the 90th percentile of the reply's copied tokens. The strict
 * comparison means equal weights select nothing.
 */
export function selectHighlights(copied) {
    if (copied.length === 0) {
        return [];
    }
    const cut = percentile(copied.map((t) => t.copy_weight), 90);
    const chosen = new Set();
    for (const token of copied) {
        if (token.copy_weight > cut) {
            chosen.add(token.surface.toLowerCase());
        }
    }
    return [...chosen];
}
