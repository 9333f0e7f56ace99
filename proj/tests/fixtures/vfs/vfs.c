extern char cwd_path[256];
extern int use_fat32;

int vfs_lookup(const char *name) {
    if (use_fat32) {
        return cwd_path[0] == name[0];
    }
    return 0;
}
