#pragma once

#include <memory>
#include <string>

#include "memlabel/dataset.hpp"
#include "memlabel/labeling_service.hpp"

namespace memlabel {

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    /// Source for time-series / vector previews; may be null.
    const Dataset* dataset = nullptr;
    /// Directory of `<sample_id>.<ext>` image previews; empty disables.
    std::string preview_dir;
    /// Static assets (the labeling UI) mounted at `/`; empty disables.
    std::string static_dir;
};

/// JSON-over-HTTP front end of a LabelSession.
///
///   GET  /session                 {id, label_space, budget:{N_L, consumed}, status}
///   GET  /queries/pending?limit=k [{query_id, sample_id, seed, preview_url}]
///   GET  /samples/{id}/preview    JSON array of values, or image bytes
///   POST /labels                  {query_id, class_index} -> {accepted, consumed}
///   GET  /progress                {total_queries, answered, per_seed_counts}
///
/// Label errors: 404 unknown query, 409 duplicate or out of budget, 422 bad class.
class LabelService {
public:
    LabelService(LabelSession& session, ServiceOptions options);
    ~LabelService();

    /// Binds the socket; returns the bound port.
    int bind();
    /// Serves until stop(); bind() must have succeeded.
    void run();
    /// bind() + run() on a background thread; returns the bound port.
    int start();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace memlabel
