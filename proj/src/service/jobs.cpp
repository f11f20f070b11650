#include "daedalus/jobs.hpp"

#include <sstream>

#include "daedalus/model.hpp"
#include "daedalus/projection.hpp"

namespace daedalus {

std::string_view to_string(JobState s) {
    switch (s) {
        case JobState::queued: return "queued";
        case JobState::running: return "running";
        case JobState::done: return "done";
        case JobState::failed: return "failed";
        case JobState::cancelled: return "cancelled";
    }
    return "unknown";
}

JobManager::JobManager(unsigned workers, std::uint64_t first_id) : counter_(first_id > 0 ? first_id - 1 : 0) {
    workers = std::max(1u, workers);
    for (unsigned i = 0; i < workers; ++i) threads_.emplace_back([this] { run(); });
}

JobManager::~JobManager() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
        for (auto& [id, job] : jobs_) job->cancel = true;
    }
    work_ready_.notify_all();
    for (auto& t : threads_) t.join();
}

std::pair<std::string, bool> JobManager::submit(const std::string& key, nlohmann::json request, Task task) {
    std::lock_guard lock(mutex_);
    if (auto it = in_flight_.find(key); it != in_flight_.end()) return {it->second, false};
    auto job = std::make_shared<Job>();
    std::ostringstream id;
    id << "job-" << ++counter_;
    job->view.id = id.str();
    job->view.request = std::move(request);
    job->view.submitted_at = now_iso8601();
    job->key = key;
    job->task = std::move(task);
    jobs_.emplace(job->view.id, job);
    in_flight_.emplace(key, job->view.id);
    queue_.push_back(job);
    work_ready_.notify_one();
    return {job->view.id, true};
}

std::optional<JobView> JobManager::status(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second->view;
}

std::optional<JobView> JobManager::cancel(const std::string& id) {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) return std::nullopt;
    auto& job = *it->second;
    if (job.view.state == JobState::queued) {
        std::erase(queue_, it->second);
        job.view.state = JobState::cancelled;
        job.view.finished_at = now_iso8601();
        in_flight_.erase(job.key);
        changed_.notify_all();
    } else if (job.view.state == JobState::running) {
        job.cancel = true;
    }
    return job.view;
}

std::optional<JobView> JobManager::wait(const std::string& id, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) return std::nullopt;
    auto job = it->second;
    changed_.wait_for(lock, timeout, [&] { return terminal(job->view.state); });
    return job->view;
}

void JobManager::run() {
    for (;;) {
        std::shared_ptr<Job> job;
        {
            std::unique_lock lock(mutex_);
            work_ready_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (stopping_) return;
            job = queue_.front();
            queue_.pop_front();
            job->view.state = JobState::running;
            changed_.notify_all();
        }
        Progress progress = [&](double fraction) {
            std::lock_guard lock(mutex_);
            job->view.progress = std::max(job->view.progress, std::min(1.0, fraction));
            return !job->cancel.load();
        };
        JobState final_state = JobState::done;
        std::string error;
        std::filesystem::path result;
        try {
            result = job->task(job->view.id, progress);
            if (job->cancel) final_state = JobState::cancelled;
        } catch (const ProjectionCancelled&) {
            final_state = JobState::cancelled;
        } catch (const std::exception& e) {
            final_state = JobState::failed;
            error = e.what();
        }
        if (final_state == JobState::cancelled && !result.empty()) {
            std::error_code ec;
            std::filesystem::remove(result, ec);
        }
        std::lock_guard lock(mutex_);
        job->view.state = final_state;
        job->view.error = error;
        job->view.finished_at = now_iso8601();
        if (final_state == JobState::done) {
            job->view.result = result;
            job->view.progress = 1.0;
        }
        job->task = nullptr;
        in_flight_.erase(job->key);
        changed_.notify_all();
    }
}

}  // namespace daedalus
