#pragma once

#include <string>
#include <vector>

namespace masklab {

struct PlotSkip {
    std::string plot;
    std::string reason;
};

struct PlotManifest {
    std::vector<std::string> written;
    std::vector<PlotSkip> skipped;
};

/// Renders drift.svg, perturbation.svg and fidelity_bars.svg from the
/// artifact files in dir. A missing or empty input skips its plot with a
/// note in the returned manifest, which is also written to
/// plots_manifest.json. Identical inputs yield byte-identical SVGs.
PlotManifest render_plots(const std::string& dir);

}  // namespace masklab
