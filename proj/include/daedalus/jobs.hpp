#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

namespace daedalus {

enum class JobState { queued, running, done, failed, cancelled };
std::string_view to_string(JobState state);

struct JobView {
    std::string id;
    JobState state = JobState::queued;
    double progress = 0;  // fraction of epochs done
    nlohmann::json request;
    std::string error;
    std::filesystem::path result;  // set when done
    std::string submitted_at;
    std::string finished_at;
};

/// Bounded worker pool running projection jobs. A job's task receives a
/// progress callback that returns false once cancellation was requested, and
/// returns the path of its persisted result.
class JobManager {
public:
    using Progress = std::function<bool(double)>;
    using Task = std::function<std::filesystem::path(const std::string& job_id, const Progress&)>;

    /// Job ids are "job-<n>" counting from `first_id`.
    explicit JobManager(unsigned workers = 2, std::uint64_t first_id = 1);
    ~JobManager();
    JobManager(const JobManager&) = delete;
    JobManager& operator=(const JobManager&) = delete;

    /// Returns the id of an identical queued or running job when `key`
    /// matches one; otherwise enqueues `task`. The bool is true for new jobs.
    std::pair<std::string, bool> submit(const std::string& key, nlohmann::json request, Task task);
    std::optional<JobView> status(const std::string& id) const;
    /// Queued jobs end cancelled at once; running ones at their next epoch.
    /// Returns the view after the request, nullopt for unknown ids.
    std::optional<JobView> cancel(const std::string& id);
    /// Blocks until the job is in a terminal state or `timeout` passes.
    std::optional<JobView> wait(const std::string& id, std::chrono::milliseconds timeout) const;
    unsigned workers() const { return static_cast<unsigned>(threads_.size()); }

private:
    struct Job {
        JobView view;
        std::string key;
        Task task;
        std::atomic<bool> cancel{false};
    };

    void run();
    static bool terminal(JobState s) { return s == JobState::done || s == JobState::failed || s == JobState::cancelled; }

    mutable std::mutex mutex_;
    mutable std::condition_variable changed_;
    std::condition_variable work_ready_;
    std::map<std::string, std::shared_ptr<Job>> jobs_;
    std::map<std::string, std::string> in_flight_;  // key -> id
    std::deque<std::shared_ptr<Job>> queue_;
    std::uint64_t counter_ = 0;
    bool stopping_ = false;
    std::vector<std::thread> threads_;
};

}  // namespace daedalus
